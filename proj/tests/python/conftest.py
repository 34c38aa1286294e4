import os
import sys

# When run from ctest the extension lives in the build tree; fall back to an
# installed rpdkit package otherwise.
ext_dir = os.environ.get("RPDKIT_EXT_DIR")
if ext_dir:
    sys.path.insert(0, ext_dir)
