import pathlib
import sys

# make `src` importable when pytest is started from any directory
sys.path.insert(0, str(pathlib.Path(__file__).parent))
