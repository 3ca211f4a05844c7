"""pqmon: residential power-quality monitoring suite.

Device simulator, acquisition daemon, DSP analysis (RMS, peak, DFT,
spike-filtered THD, half-cycle RMS) and sag/surge/interruption reporting,
with a CLI (`pq`) and an HTTP/WS operator API.
"""

from .analysis import (
    HarmonicTable,
    InsufficientDataError,
    SampleWindow,
    Spectrum,
    dft_magnitudes,
    display_spectrum,
    harmonic_table,
    peak,
    rms,
    thd,
    trim_to_whole_cycles,
)
from .conversion import (
    ConversionConfig,
    adc_to_voltage,
    divider_ratio,
    load_config_file,
    voltage_to_adc,
)
from .events import (
    PqEvent,
    PqReport,
    RmsHalfSeries,
    Thresholds,
    build_report,
    classify_events,
    rms_half_series,
)
from .protocol import (
    AcquisitionSession,
    Malformed,
    PortConfig,
    Reading,
    SessionStart,
    StreamDecoder,
    decode_stream,
    encode_reading,
    encode_session_header,
    open_session,
)
from .simulator import DisturbanceSpec, Harmonic, SimulatorServer, WaveformSpec, synthesize
from .storage import RawStore, RmsStore, read_report_file, write_report_file
from .service import Daemon, create_app

__version__ = "0.1.0"

__all__ = [
    "AcquisitionSession",
    "ConversionConfig",
    "Daemon",
    "DisturbanceSpec",
    "Harmonic",
    "HarmonicTable",
    "InsufficientDataError",
    "Malformed",
    "PortConfig",
    "PqEvent",
    "PqReport",
    "RawStore",
    "Reading",
    "RmsHalfSeries",
    "RmsStore",
    "SampleWindow",
    "SessionStart",
    "SimulatorServer",
    "Spectrum",
    "StreamDecoder",
    "Thresholds",
    "WaveformSpec",
    "adc_to_voltage",
    "build_report",
    "classify_events",
    "create_app",
    "decode_stream",
    "dft_magnitudes",
    "display_spectrum",
    "divider_ratio",
    "encode_reading",
    "encode_session_header",
    "harmonic_table",
    "load_config_file",
    "open_session",
    "peak",
    "read_report_file",
    "rms",
    "rms_half_series",
    "synthesize",
    "thd",
    "trim_to_whole_cycles",
    "voltage_to_adc",
    "write_report_file",
]
