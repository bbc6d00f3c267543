class ConfigError(ValueError):
    """Invalid system, scenario, oracle or controller configuration."""


class ControllerError(RuntimeError):
    """A controller stage failed during a rollout.

    ``line`` is the step of the per-slot loop that failed (1-based, matching
    the controller's documented loop: act, observe cost, record disturbance,
    update regularizer, receive predictions, build hint, solve update).
    """

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line
