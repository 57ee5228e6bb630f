import os
import sys

# The build registers this test with SURFREC_MODULE_DIR pointing at the
# directory that holds the compiled _surfrec module.
_mod_dir = os.environ.get("SURFREC_MODULE_DIR")
if _mod_dir and _mod_dir not in sys.path:
    sys.path.insert(0, _mod_dir)
