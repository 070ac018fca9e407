from pyebh.random.random_design import gen_design, gen_truth  # noqa
from pyebh.random.rng import CounterRNG, as_rng  # noqa
