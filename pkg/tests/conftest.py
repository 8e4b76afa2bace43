import sys
from pathlib import Path

from hypothesis import settings

# integrator-backed properties run well past the default 200 ms deadline
settings.register_profile("floquet4", deadline=None, derandomize=True)
settings.load_profile("floquet4")

sys.path.insert(0, str(Path(__file__).parent))
