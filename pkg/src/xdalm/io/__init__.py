"""Tabular I/O, run configuration and synthetic data."""

from .config import RunConfig, dump_config, load_config, parse_config
from .synth import (
    FactorModelSpec,
    LDIScenario,
    OptionScenario,
    rank_deficient_spec,
    synth_ldi_scenario,
    synth_option_scenario,
    synth_panel,
)
from .tables import (
    OptionQuote,
    PriceTable,
    load_cashflows,
    load_curves,
    load_option_quotes,
    load_price_table,
    load_prices,
    load_returns,
    write_cashflows,
    write_curves,
    write_option_quotes,
    write_price_table,
    write_returns,
)

__all__ = [
    "FactorModelSpec",
    "LDIScenario",
    "OptionQuote",
    "OptionScenario",
    "PriceTable",
    "RunConfig",
    "dump_config",
    "load_cashflows",
    "load_config",
    "load_curves",
    "load_option_quotes",
    "load_price_table",
    "load_prices",
    "load_returns",
    "parse_config",
    "rank_deficient_spec",
    "synth_ldi_scenario",
    "synth_option_scenario",
    "synth_panel",
    "write_cashflows",
    "write_curves",
    "write_option_quotes",
    "write_price_table",
    "write_returns",
]
