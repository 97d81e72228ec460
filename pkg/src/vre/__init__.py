def get_version():
    try:
        from importlib.metadata import version
        __version__ = version("vre-bench")
    except Exception:
        __version__ = "0.0.0"

    return __version__
