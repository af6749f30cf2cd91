import logging

import pytest

from utils.completion import stnn_complete
from utils.logger import (app_logger, log_convergence, log_data_processing, log_info,
                          log_iteration, log_warning)
from utils.sampling import SampleMask


@pytest.fixture
def records(caplog):
    caplog.set_level(logging.DEBUG, logger="SPTC")
    return caplog


def last(records, text):
    matching = [r for r in records.records if text in r.getMessage()]
    assert matching, f"nenhum registro contém {text!r}"
    return matching[-1]


@pytest.mark.unit
class TestCallerAttribution:
    """Registros apontam para quem chamou o logger"""

    def test_convenience_functions(self, records):
        log_info("via função")
        log_warning("aviso via função")
        assert last(records, "via função").funcName == "test_convenience_functions"
        assert last(records, "aviso via função").funcName == "test_convenience_functions"

    def test_method_called_directly(self, records):
        app_logger.info("via método")
        record = last(records, "via método")
        assert record.funcName == "test_method_called_directly"
        assert record.module == "test_logger"

    def test_data_processing(self, records):
        log_data_processing("resize", input_shape=(4, 4), output_shape=(2, 2))
        app_logger.log_data_processing("crop", error=ValueError("ruim"))
        assert last(records, "resize").funcName == "test_data_processing"
        failure = last(records, "crop")
        assert failure.levelno == logging.ERROR
        assert failure.funcName == "test_data_processing"

    def test_convergence_and_iteration(self, records):
        log_convergence("stnn", True, 12, 1e-6)
        app_logger.log_convergence("smnn", False, 30, 0.2)
        log_iteration("stnn", 3, 0.5, 0.0, 0.1)
        for text in ("convergiu em 12", "max_iters=30", "iter=3"):
            assert last(records, text).funcName == "test_convergence_and_iteration"
        assert last(records, "max_iters=30").levelno == logging.WARNING

    def test_engine_reports_point_at_completion(self, records, rank1_tensor):
        stnn_complete(rank1_tensor, SampleMask.full((16, 16)))
        for text in ("stnn convergiu", "Data processing successful: stnn_complete"):
            record = last(records, text)
            assert (record.module, record.funcName) == ("completion", "_report")
