#ifndef TPKA_TPKA_HPP
#define TPKA_TPKA_HPP

#include "tpka/accounting.hpp"
#include "tpka/adversary.hpp"
#include "tpka/config.hpp"
#include "tpka/coverage_mc.hpp"
#include "tpka/crypto.hpp"
#include "tpka/energy.hpp"
#include "tpka/geometry.hpp"
#include "tpka/key.hpp"
#include "tpka/protocol.hpp"
#include "tpka/report_io.hpp"
#include "tpka/selfcheck.hpp"
#include "tpka/simulator.hpp"
#include "tpka/topology.hpp"
#include "tpka/trace.hpp"
#include "tpka/wire.hpp"

#endif  // TPKA_TPKA_HPP
