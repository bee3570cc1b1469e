"""Puts the repository root on sys.path so `config`, `data` and `services` import as packages"""

import sys
from pathlib import Path

ROOT = Path(__file__).parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))
