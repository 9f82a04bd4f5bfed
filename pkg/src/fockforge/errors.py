"""Exception types raised by fockforge."""


class FockForgeError(Exception):
    """Base class for all library errors."""


class DimensionError(FockForgeError, ValueError):
    """Mode counts or matrix shapes do not agree."""


class NormalizationError(FockForgeError, ValueError):
    """A zero state was asked to be normalized."""


class EncodingError(FockForgeError, ValueError):
    """A ket cannot be mapped to or from the qubit path encoding."""


class ElementError(FockForgeError, ValueError):
    """An optical element is malformed or its parameters are out of domain."""


class DegeneratePacketError(FockForgeError, ValueError):
    """Wavepackets are linearly dependent and cannot be orthonormalized."""

    def __init__(self, index, pivot):
        self.index = index
        self.pivot = pivot
        super().__init__(
            f"packet {index} is linearly dependent on earlier packets "
            f"(pivot norm {pivot:.3e})"
        )


class CapacityError(FockForgeError, ValueError):
    """A packet table or period range is too small for the request."""


class GainError(FockForgeError, ValueError):
    """A circuit matrix amplifies (singular value above one)."""


class SamplerError(FockForgeError, RuntimeError):
    """Sampling is impossible for the given circuit and input."""


class ValidationError(FockForgeError, ValueError):
    """A device file does not satisfy the schema or its invariants."""
