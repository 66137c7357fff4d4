#pragma once

#include "fuzz_assure/bootstrap.hpp"
#include "fuzz_assure/error.hpp"
#include "fuzz_assure/estimators.hpp"
#include "fuzz_assure/flakiness.hpp"
#include "fuzz_assure/incidence.hpp"
#include "fuzz_assure/ingest.hpp"
#include "fuzz_assure/random.hpp"
#include "fuzz_assure/report.hpp"
#include "fuzz_assure/simulator.hpp"
