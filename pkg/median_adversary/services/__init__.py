# Services module - Business logic layer

from median_adversary.services.experiment_service import experiment_service
from median_adversary.services.metric_service import metric_service

__all__ = [
    "experiment_service",
    "metric_service",
]
