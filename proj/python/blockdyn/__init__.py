"""Shared community structure and recurring connectivity states in multilayer
binary networks."""

__version__ = "0.1.0"


def _load_core():
    try:
        from . import _core
        return _core
    except ImportError:
        # In-tree test runs load the freshly built extension from the build
        # directory instead of an installed wheel.
        import importlib.machinery
        import importlib.util
        import os
        import sys

        ext_dir = os.environ.get("BLOCKDYN_EXT_DIR")
        if not ext_dir:
            raise
        suffixes = importlib.machinery.EXTENSION_SUFFIXES
        for fname in sorted(os.listdir(ext_dir)):
            if fname.startswith("_core") and any(fname.endswith(s) for s in suffixes):
                loader = importlib.machinery.ExtensionFileLoader(
                    __name__ + "._core", os.path.join(ext_dir, fname)
                )
                spec = importlib.util.spec_from_loader(loader.name, loader)
                module = importlib.util.module_from_spec(spec)
                loader.exec_module(module)
                sys.modules[spec.name] = module
                return module
        raise


_core = _load_core()

for _name in dir(_core):
    if not _name.startswith("_"):
        globals()[_name] = getattr(_core, _name)

del _name, _load_core
