from fractions import Fraction as F

from bdchain.chain import (
    ChainSpec,
    ConstantDrift,
    EventuallyConstant,
    Example1,
    Example1Mirrored,
    SimpleSymmetric,
)


def srw(k=5):
    return ChainSpec(SimpleSymmetric(), k, "srw")


def example1(k=1):
    return ChainSpec(Example1(), k, "example1")


def mirrored(k=1):
    return ChainSpec(Example1Mirrored(), k, "example1-mirrored")


def ec2(k=2):
    return ChainSpec(EventuallyConstant(((F(2, 3), F(1, 3)),), 1), k, "ec")


def drift(k=1, p=F(2, 3)):
    return ChainSpec(ConstantDrift(p), k, "drift")


ACCEPTANCE_SET = (srw(5), example1(1), mirrored(1), ec2(2), drift(1))


_verdicts: dict = {}


def record_verdict(number: int, title: str, ok: bool, detail: str) -> None:
    _verdicts[number] = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_verdicts):
        terminalreporter.write_line(_verdicts[number])
