import os

DEFAULT_SIZE_CAP = 4096


class SizeCapError(ValueError):
    """Requested operator side exceeds the dense-size cap."""


def size_cap() -> int:
    """Largest allowed matrix side; ``VBROADCAST_SIZE_CAP`` overrides the default."""
    raw = os.environ.get("VBROADCAST_SIZE_CAP")
    if raw is None or raw == "":
        return DEFAULT_SIZE_CAP
    value = int(raw)
    if value < 1:
        raise ValueError("VBROADCAST_SIZE_CAP must be a positive integer")
    return value


def check_side(side: int, cap: int | None = None) -> None:
    cap = size_cap() if cap is None else cap
    if side > cap:
        raise SizeCapError(f"operator side {side} exceeds size cap {cap}")
