#pragma once

#include "wcsearch/acquisition.hpp"
#include "wcsearch/circuit_file.hpp"
#include "wcsearch/error.hpp"
#include "wcsearch/external_simulator.hpp"
#include "wcsearch/gaussian_process.hpp"
#include "wcsearch/hyperspace.hpp"
#include "wcsearch/metrics.hpp"
#include "wcsearch/oracle.hpp"
#include "wcsearch/planner.hpp"
#include "wcsearch/report.hpp"
#include "wcsearch/sampling.hpp"
#include "wcsearch/synthetic_circuit.hpp"
