"""Exception types shared across the package."""


class NestedOTError(ValueError):
    """Base class for input and consistency errors raised by the toolkit."""


class OracleSizeLimit(NestedOTError):
    pass


class NoCertificate(NestedOTError):
    pass


class IntegrationBlowUp(NestedOTError):
    pass


class ToleranceBreach(NestedOTError):
    """A numerical verifier found a value outside its admissible bound."""


class GronwallViolation(ToleranceBreach):
    pass
