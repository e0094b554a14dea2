import os
from pathlib import Path

# Reference oracle runs are the most expensive part of the suite; cache them
# in-repo so repeated pytest invocations reuse the same certified files.
_CACHE = Path(__file__).resolve().parent.parent / ".pintlab-cache"
os.environ.setdefault("PINTLAB_CACHE", str(_CACHE))
os.environ.setdefault("MPLBACKEND", "Agg")
