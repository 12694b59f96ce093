__all__ = sorted(name for name in ("b", "a"))
