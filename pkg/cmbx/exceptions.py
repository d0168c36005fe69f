class CapacityError(ValueError):
    """An exhaustive enumeration was requested beyond its size bound."""


class StructureError(ValueError):
    """Shapes, lengths or cross references do not fit together."""


class DomainError(ValueError):
    """Parameters fall outside the domain where a family or model is defined."""


class ModelSchemaError(ValueError):
    """An instance file could not be read into a valid model."""
