"""Dense tensors, parameters and the recording tape for reverse-mode AD.

Operations record onto the innermost active :class:`Tape`. Outside of a tape
nothing is recorded, which is how all inference-time code runs.
"""

from __future__ import annotations

import numpy as np

from ..errors import RejectedInput

DTYPE = np.float64

_ACTIVE: list["Tape"] = []


class Tensor:
    """A float64 array plus an adjoint slot filled in by :meth:`Tape.backward`."""

    __slots__ = ("value", "grad", "tape")

    def __init__(self, value, tape: "Tape | None" = None):
        self.value = np.asarray(value, dtype=DTYPE)
        self.grad = None
        self.tape = tape

    @property
    def shape(self):
        return self.value.shape

    @property
    def tracked(self) -> bool:
        return self.tape is not None

    def item(self) -> float:
        return float(self.value)

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, tracked={self.tracked})"

    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)


class Parameter(Tensor):
    """A trainable leaf. ``grad`` always has the shape of ``value``."""

    __slots__ = ("name", "state")

    def __init__(self, value, name: str = ""):
        super().__init__(value)
        self.name = name
        self.grad = np.zeros_like(self.value)
        self.state: dict[str, np.ndarray] = {}

    @property
    def tracked(self) -> bool:
        return True

    def zero_grad(self):
        self.grad.fill(0.0)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape})"


class Tape:
    """Ordered record of the differentiable operations of one forward pass.

    Use as a context manager; every op executed inside appends one entry. Entries
    are replayed in reverse by :meth:`backward`, each exactly once.
    """

    def __init__(self):
        self.entries: list[tuple[Tensor, object]] = []
        self.consumed = False

    def __enter__(self):
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE.remove(self)
        return False

    def __len__(self):
        return len(self.entries)

    def record(self, out: Tensor, backward_fn) -> Tensor:
        out.tape = self
        self.entries.append((out, backward_fn))
        return out

    def backward(self, loss: Tensor) -> None:
        if loss.tape is not self:
            raise RejectedInput("loss was not recorded on this tape")
        if loss.value.size != 1:
            raise RejectedInput(f"backward needs a scalar loss, got shape {loss.shape}")
        if self.consumed:
            raise RejectedInput("tape has already been replayed")
        self.consumed = True
        loss.grad = np.ones_like(loss.value)
        for out, fn in reversed(self.entries):
            if out.grad is not None:
                fn(out.grad)
        # free intermediate adjoints; parameters keep theirs
        for out, _ in self.entries:
            out.grad = None


def current_tape() -> Tape | None:
    return _ACTIVE[-1] if _ACTIVE else None


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(param) into every Parameter reachable from ``loss``."""
    if not isinstance(loss, Tensor) or isinstance(loss, Parameter) or loss.tape is None:
        raise RejectedInput("backward requires a recorded scalar tensor")
    loss.tape.backward(loss)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def accumulate(t: Tensor, g: np.ndarray) -> None:
    """Add ``g`` into the adjoint of ``t`` (no-op for untracked constants)."""
    if isinstance(t, Parameter):
        t.grad += g
    elif t.tape is not None:
        if t.grad is None:
            t.grad = np.array(g, dtype=DTYPE, copy=True)
        else:
            t.grad = t.grad + g


def make_output(value: np.ndarray, inputs, backward_fn) -> Tensor:
    """Wrap ``value``; record ``backward_fn`` if any input is tracked and a tape is live."""
    tape = current_tape()
    out = Tensor(value)
    if tape is not None and any(getattr(x, "tracked", False) for x in inputs):
        tape.record(out, backward_fn)
    return out
