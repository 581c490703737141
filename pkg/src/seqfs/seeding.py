import hashlib


def derive_seed(seed: int, label: str) -> int:
    """64-bit child seed from a parent seed and a stage label.

    Children depend only on (seed, label), so adding a stage never shifts the
    random streams of existing ones.
    """
    digest = hashlib.sha256(f"{int(seed)}/{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little")
