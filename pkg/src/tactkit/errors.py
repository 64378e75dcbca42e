class TactError(Exception):
    """Base class for domain errors (CLI exit code 1)."""


class DescriptionError(TactError):
    def __init__(self, path, message):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class DesignError(TactError):
    pass


class StatsError(TactError):
    pass


class StoreError(TactError):
    pass


class StrategyError(TactError):
    pass
