"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value violates one of its invariants."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class UnstableQueueError(ValueError):
    """Offered load at a queue is >= 1, so the mean delay is unbounded."""

    def __init__(self, utilization, what="queue"):
        self.utilization = utilization
        super().__init__(f"{what} is unstable: utilization {utilization:.6g} >= 1")
