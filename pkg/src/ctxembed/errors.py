"""Exception types shared across the toolkit."""


class GraphFormatError(ValueError):
    """Malformed edge-list or label input."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class NotApplicableError(ValueError):
    """A measure was requested for a graph type it is not defined on."""


class ConvergenceError(RuntimeError):
    def __init__(self, message, iterations):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations


class DanglingNodeError(ValueError):
    """A walk reached (or would start from) a node without outgoing edges."""

    def __init__(self, node, label=None):
        name = label if label is not None else node
        super().__init__(f"node {name} has no outgoing edge")
        self.node = node


class DivergenceError(ValueError):
    def __init__(self, beta, spectral_radius):
        super().__init__(
            f"Katz series diverges: beta={beta:g} * spectral radius "
            f"{spectral_radius:.6g} >= 1"
        )
        self.beta = beta
        self.spectral_radius = spectral_radius


class SizeLimitError(ValueError):
    """A dense computation was requested on a graph that is too large."""


class TrainingError(RuntimeError):
    def __init__(self, message, learning_rate=None, step=None):
        details = []
        if learning_rate is not None:
            details.append(f"learning rate {learning_rate:g}")
        if step is not None:
            details.append(f"step {step}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)
        self.learning_rate = learning_rate
        self.step = step


class UsageError(ValueError):
    """Incompatible method/task combination or bad run configuration."""
