"""The three instances frozen under tests/golden."""

from helpers import build, small_instance

from eoscsp.generate import sample_scenario


def single_observation():
    return build({"s0": 1}, {}, [("r", "u0", 3, 5, [("s0", 10, 30)])])


FIXTURES = {
    "sample": sample_scenario,
    "single": single_observation,
    "small_random": lambda: small_instance(19, 10),
}
