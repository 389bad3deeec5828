"""Exception types shared across the package."""


class PianotactError(Exception):
    """Base class for package-specific errors."""


# MIDI files and live capture

class MalformedHeader(PianotactError):
    pass


class UnsupportedFormat(PianotactError):
    pass


class EmptyTempoMap(PianotactError):
    pass


# Performance modelling and scoring

class EmptyPerformance(PianotactError):
    pass


class ZeroLengthReference(PianotactError):
    pass


# Haptic schedule compilation

class UnfingeredEvent(PianotactError):
    pass


class SongLongerThanSession(PianotactError):
    pass


# Glove wire protocol and simulator

class CrcMismatch(PianotactError):
    pass


class TruncatedFrame(PianotactError):
    pass


class UnknownMsgType(PianotactError):
    pass


class CommitWithoutChunks(PianotactError):
    pass


class StartWithoutSchedule(PianotactError):
    pass


# Session store and analytics

class DuplicateSession(PianotactError):
    pass


class MissingEval(PianotactError):
    pass


class MissingTest(PianotactError):
    pass


class EmptyGroup(PianotactError):
    pass


class DegenerateGroups(PianotactError):
    pass


# Study assignment

class OddCount(PianotactError):
    pass


class MalformedTeam(PianotactError):
    pass


class AlreadyPeriod2(PianotactError):
    pass


# HTTP service

class UnknownSong(PianotactError):
    pass


class NoDevice(PianotactError):
    pass


class DeviceBusy(PianotactError):
    pass


class SessionAlreadyActive(PianotactError):
    pass
