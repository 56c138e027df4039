from .base_controller import SupermanMixin
from .bench_operations import BenchOperationsController
from .dataset_operations import DatasetOperationsController
from .interpret_operations import InterpretOperationsController
from .run_config import RunConfig
from .training_operations import TrainingOperationsController
from .treemetric_operations import TreeMetricOperationsController


class SupermanController(SupermanMixin):
    """Main controller for SuperMAN datasets, models and analyses."""

    def __init__(self) -> None:
        """Initialize the controller with all operation handlers."""
        super().__init__()
        self.dataset_ops = DatasetOperationsController()
        self.training_ops = TrainingOperationsController()
        self.interpret_ops = InterpretOperationsController()
        self.treemetric_ops = TreeMetricOperationsController()
        self.bench_ops = BenchOperationsController()

    def __getattr__(self, name):
        """Delegate method calls to the appropriate operation handler."""
        handlers = [
            self.__dict__.get(key)
            for key in ("dataset_ops", "training_ops", "interpret_ops", "treemetric_ops", "bench_ops")
        ]
        for handler in handlers:
            if handler is not None and hasattr(handler, name):

                def create_method(handler, method_name):
                    def method(*args, **kwargs):
                        # Hand the session to the handler, then take back whatever it changed
                        for field in self.SESSION_FIELDS:
                            setattr(handler, field, getattr(self, field))
                        try:
                            return getattr(handler, method_name)(*args, **kwargs)
                        finally:
                            for field in self.SESSION_FIELDS:
                                setattr(self, field, getattr(handler, field))

                    return method

                return create_method(handler, name)
        raise AttributeError(f"'{self.__class__.__name__}' has no attribute '{name}'")


__all__ = ["SupermanController", "RunConfig"]
