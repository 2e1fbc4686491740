"""Exception hierarchy shared by every stage of the pipeline."""


class FpmechError(Exception):
    """Base class for all package errors."""


# ingest
class MalformedRecord(FpmechError, ValueError):
    pass


class EmptyStructure(FpmechError, ValueError):
    pass


class MissingColumn(FpmechError, KeyError):
    pass


class InvalidRecord(FpmechError, ValueError):
    pass


class InvalidQy(InvalidRecord):
    pass


class SequenceTooShort(InvalidRecord):
    pass


# chromophore / graph
class NoChromophore(FpmechError, LookupError):
    pass


class MissingRegionAtoms(FpmechError, UserWarning):
    """Issued as a warning: the region falls back to a residue centroid."""


class EmptyLocalNeighbourhood(FpmechError, ValueError):
    pass


# model / evaluate
class InsufficientBandData(FpmechError, ValueError):
    pass


class NoModelForBand(FpmechError, KeyError):
    pass


class TooFewSamples(FpmechError, ValueError):
    pass


class DegenerateTarget(FpmechError, ValueError):
    pass


class EmptyBucket(FpmechError, LookupError):
    pass


# cli
class MissingFeatureTable(FpmechError, FileNotFoundError):
    pass


class ConfigMismatch(FpmechError, ValueError):
    pass
