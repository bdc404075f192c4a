"""Link-level simulation and closed-form analysis of RIS-assisted spatial modulation."""

from ris_sm.constellation import Constellation, SmSymbol, build_constellation, demap_symbol, hamming_distance, map_bits

__all__ = [
    "Constellation",
    "SmSymbol",
    "build_constellation",
    "demap_symbol",
    "hamming_distance",
    "map_bits",
]

__version__ = "0.1.0"
