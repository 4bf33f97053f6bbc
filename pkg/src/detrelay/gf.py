"""Arithmetic in prime fields F_q."""

from __future__ import annotations

from dataclasses import dataclass

MAX_MODULUS = 2**31


class FieldMismatchError(ValueError):
    """Raised when elements of two different fields are combined."""


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


@dataclass(frozen=True)
class PrimeField:
    """The field of residues modulo a prime ``q`` (``q < 2**31``)."""

    q: int

    def __post_init__(self):
        if not isinstance(self.q, int) or isinstance(self.q, bool):
            raise TypeError(f"field modulus must be an int, got {self.q!r}")
        if self.q >= MAX_MODULUS:
            raise ValueError(f"field modulus must be below 2**31, got {self.q}")
        if not _is_prime(self.q):
            raise ValueError(f"field modulus must be prime, got {self.q}")

    def __call__(self, value: int) -> FieldElement:
        return FieldElement(int(value) % self.q, self)

    @property
    def zero(self) -> FieldElement:
        return FieldElement(0, self)

    @property
    def one(self) -> FieldElement:
        return FieldElement(1, self)

    def elements(self) -> list[FieldElement]:
        return [FieldElement(v, self) for v in range(self.q)]

    def inv_value(self, value: int) -> int:
        """Inverse of a raw residue; used by the matrix kernels."""
        value %= self.q
        if value == 0:
            raise ZeroDivisionError(f"0 has no inverse in F_{self.q}")
        return pow(value, self.q - 2, self.q)

    def __repr__(self):
        return f"F_{self.q}"


@dataclass(frozen=True)
class FieldElement:
    value: int
    field: PrimeField

    def __post_init__(self):
        if not 0 <= self.value < self.field.q:
            raise ValueError(f"{self.value} is not a residue modulo {self.field.q}")

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.field != self.field:
                raise FieldMismatchError(f"cannot combine {self.field} and {other.field}")
            return other.value
        if isinstance(other, int):
            return other % self.field.q
        return NotImplemented

    def __add__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return FieldElement((self.value + v) % self.field.q, self.field)

    __radd__ = __add__

    def __sub__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return FieldElement((self.value - v) % self.field.q, self.field)

    def __rsub__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return FieldElement((v - self.value) % self.field.q, self.field)

    def __mul__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return FieldElement((self.value * v) % self.field.q, self.field)

    __rmul__ = __mul__

    def __neg__(self):
        return FieldElement(-self.value % self.field.q, self.field)

    def inverse(self) -> FieldElement:
        return FieldElement(self.field.inv_value(self.value), self.field)

    def __truediv__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return FieldElement(self.value * self.field.inv_value(v) % self.field.q, self.field)

    def __rtruediv__(self, other):
        v = self._coerce(other)
        if v is NotImplemented:
            return v
        return FieldElement(v * self.field.inv_value(self.value) % self.field.q, self.field)

    def __int__(self):
        return self.value

    __index__ = __int__

    def __bool__(self):
        return self.value != 0

    def __repr__(self):
        return f"{self.value} (mod {self.field.q})"


def add(a: FieldElement, b: FieldElement) -> FieldElement:
    return a + b


def sub(a: FieldElement, b: FieldElement) -> FieldElement:
    return a - b


def mul(a: FieldElement, b: FieldElement) -> FieldElement:
    return a * b


def neg(a: FieldElement) -> FieldElement:
    return -a


def inv(a: FieldElement) -> FieldElement:
    return a.inverse()


def div(a: FieldElement, b: FieldElement) -> FieldElement:
    return a / b
