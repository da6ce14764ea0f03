import sys
from pathlib import Path

# make the shared example data importable as `cases`
sys.path.insert(0, str(Path(__file__).parent))
