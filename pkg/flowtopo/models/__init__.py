from flowtopo.models.cloud import TimeSeriesPointCloud
from flowtopo.models.complex import FilteredComplex
from flowtopo.models.covariance import CovarianceField, LocalCovariance
from flowtopo.models.denoise import RmseReport, SweepRow
from flowtopo.models.ellipsoid import Ellipsoid, IntersectionResult
from flowtopo.models.persistence import PersistenceDiagram, PersistencePair, ScaleSchedule
from flowtopo.models.recurrence import GroundTruthReturns, RecurrenceScore, RecurrenceTable

__all__ = [
    "TimeSeriesPointCloud",
    "FilteredComplex",
    "LocalCovariance",
    "CovarianceField",
    "Ellipsoid",
    "IntersectionResult",
    "PersistencePair",
    "PersistenceDiagram",
    "ScaleSchedule",
    "RmseReport",
    "SweepRow",
    "RecurrenceTable",
    "GroundTruthReturns",
    "RecurrenceScore",
]
