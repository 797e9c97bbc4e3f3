"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    pass


class InvalidState(RuntimeError):
    pass


class NoClayObserved(InvalidState):
    """Cropping left nothing in the workspace."""


class PlanningFailure(RuntimeError):
    def __init__(self, message, cells=()):
        self.cells = [tuple(int(v) for v in c) for c in cells]
        if self.cells:
            message = f"{message}: {self.cells}"
        super().__init__(message)


class UnknownShape(KeyError):
    def __init__(self, name, known):
        self.name = name
        self.known = sorted(known)
        super().__init__(f"unknown shape {name!r}; known templates: {', '.join(self.known)}")

    def __str__(self):
        return self.args[0]


class BackendTransportError(RuntimeError):
    """A remote proposer could not be reached."""


class UndefinedStatistic(ValueError):
    pass
