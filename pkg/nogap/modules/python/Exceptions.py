from nogap.modules.python.TextColor import TextColor


class NoGapError(ValueError):
    """
    Base class of every numerical or configuration failure raised by nogap.
    The message follows the "ERROR: <SUMMARY>" convention of the command line tools and the
    keyword arguments are kept as a witness so reports can reproduce the failure.
    """
    summary = "COMPUTATION FAILED"
    exit_code = 2

    def __init__(self, detail=None, **witness):
        self.detail = detail
        self.witness = witness
        super().__init__(TextColor.RED + "ERROR: " + self.plain_message() + "\n" + TextColor.END)

    def plain_message(self):
        message = self.summary
        if self.detail:
            message += ": " + str(self.detail)
        if self.witness:
            message += " [" + ", ".join("{}={}".format(key, value) for key, value in sorted(self.witness.items())) + "]"
        return message

    def to_record(self):
        return {'error': type(self).__name__,
                'message': self.plain_message(),
                'witness': {key: str(value) for key, value in self.witness.items()}}


class InvalidParameters(NoGapError):
    summary = "INVALID PARAMETERS"


class NotPositiveDefinite(NoGapError):
    summary = "MATRIX NOT POSITIVE DEFINITE AT WORKING PRECISION"


class NonFinite(NoGapError):
    summary = "NON-FINITE VALUE ENCOUNTERED"


class PowerIterationStall(NoGapError):
    summary = "POWER ITERATION DID NOT CONVERGE"


class PrefixExhausted(NoGapError):
    summary = "SEQUENCE CANNOT PRODUCE ENOUGH TERMS"


class DegenerateSequence(NoGapError):
    summary = "COINCIDENT TERMS IN SEQUENCE"


class DuplicateTerm(NoGapError):
    summary = "TERM APPEARS IN BOTH MERGED SEQUENCES"


class InvalidShift(NoGapError):
    summary = "SHIFT MUST BE GREATER THAN -1"


class RationalRootCollision(NoGapError):
    summary = "SQUARE ROOT OF MULTIPLIER IS RATIONAL, FAMILIES COLLIDE"


class H2Violation(NoGapError):
    summary = "PHASE-FIELD NON-RESONANCE CONDITION VIOLATED"


class ZeroDenominator(NoGapError):
    summary = "ZERO DENOMINATOR IN GRAM ENTRY"


class NoPlateau(NoGapError):
    summary = "TRUNCATION DID NOT REACH A PLATEAU"


class TailNotSummable(NoGapError):
    summary = "PRODUCT TAIL BOUND CANNOT BE MET"


class DegenerateNormalizer(NoGapError):
    summary = "NORMALIZER UNDERFLOWS AT WORKING PRECISION"


class WindowTooSmall(NoGapError):
    summary = "FOURIER WINDOW CANNOT CAPTURE THE DECAY"


class DegenerateWindow(NoGapError):
    summary = "COINCIDENT TERMS IN COEFFICIENT WINDOW"


class InfeasibleFit(NoGapError):
    summary = "CONSTANT FIT IS INFEASIBLE"


class ZeroPerturbation(NoGapError):
    summary = "ZERO PERTURBATION, SPECTRUM COLLIDES"


class ZeroControlVector(NoGapError):
    summary = "CONTROL VECTOR COMPONENT IS ZERO, SYSTEM NOT APPROXIMATELY CONTROLLABLE"


class GridInfeasible(NoGapError):
    summary = "TIME GRID VIOLATES THE PROBE-MODE CONDITION"


class ConfigInvalid(NoGapError):
    summary = "INVALID EXPERIMENT CONFIG"
    exit_code = 1


class ComputeFailed(NoGapError):
    summary = "COMPUTATION FAILED"
    exit_code = 2


class PartialFailure(NoGapError):
    summary = "SOME GRID POINTS FAILED"
    exit_code = 3
