"""Exchange-economy thermodynamics toolkit.

Entropy oracles for exchange economies, a seeded Gibbs exchange
micro-simulator, multi-economy protocols (financial joins, thermometers,
price search, arbitrage, Carnot money pumps), trade optimization, and
derivative-relation/fluctuation verification suites.
"""

from .errors import (ConfigError, DimensionError, DomainError, InfeasibleError,
                     InsufficientDataError, NoRootError, SolverError,
                     ThermoeconError)
from .kernels import NUMBA_ENABLED, backend_name
from .models import (AffineModel, CobbDouglasModel, CobbDouglasParams,
                     CoupledTestModel, EntropyModel, MacroState,
                     PerfectSubstitutesModel, PureMoneyModel, TabulatedModel,
                     ThermoQuantities, TwoCurrencyModel, entropy, hessian,
                     inflation_rate, model_from_config, partition_log_volume,
                     thermo_quantities)
from .micro import (ContactSystem, EncounterGraph, ExchangeEngine, MicroState,
                    SimConfig, StatsAccumulator, summarize)
from .protocols import (CarnotConfig, CarnotResult, Economy, ProtocolScript,
                        ProtocolStep, arbitrage, carnot_cycle,
                        find_market_price, join_to_equilibrium,
                        reversible_money_transfer, run_script,
                        ship_thermometer)
from .tradeopt import (Allocation, GainsResult, TariffSpec, TradeClass,
                       classify_trade, cobb_douglas_gains_closed_form, exergy,
                       feasible_cone, gains_of_trade, max_entropy_allocation,
                       pareto_set, tariff_equilibrium)

__version__ = "0.1.0"
