import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from util import chain_graph  # noqa: E402

from riskpath import Layer  # noqa: E402


@pytest.fixture
def pse_chain():
    """Physical -> Social -> Economic chain, both edges attested by doc d1."""
    return chain_graph([Layer.PHYSICAL, Layer.SOCIAL, Layer.ECONOMIC],
                       severities=[0.9, 0.7, 0.8])
