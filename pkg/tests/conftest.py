import numpy as np
import pytest

from qovae.encoding import Vocabulary
from qovae.quantum import (beam_splitter, dove_prism, down_converter, hologram,
                           mirror)

# The five-device sequence whose exact output state is known in closed form:
# (|1,1,-1,-1> + |1,1,0,0> + |1,1,1,1>) / sqrt(3) up to a global phase.
GOLDEN_SETUP = (beam_splitter(1, 2), hologram(1, 1), down_converter(2, 3),
                mirror(2), hologram(0, 1))
GOLDEN_TOKENS = "BS(b,c) OAMHolo(b,1) DownConv(c,d) Ref(c) OAMHolo(a,1)"

# Eleven-device sequence found by latent-space optimization; produces the
# two-dimensional four-photon GHZ state exactly.
GHZ_SETUP = (mirror(0), hologram(3, -1), beam_splitter(1, 2), dove_prism(3),
             mirror(2), hologram(1, -1), mirror(3), beam_splitter(0, 1),
             beam_splitter(2, 3), beam_splitter(0, 2), beam_splitter(0, 2))


@pytest.fixture(scope="session")
def vocab():
    return Vocabulary()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_setup(rng, vocab, min_len=3, max_len=8):
    length = int(rng.integers(min_len, max_len + 1))
    return tuple(vocab.devices[int(i)]
                 for i in rng.integers(1, vocab.size, size=length))
