#pragma once

#include "ncdeco/core.hpp"
#include "ncdeco/diagnostics.hpp"
#include "ncdeco/dynamics.hpp"
#include "ncdeco/harness/config.hpp"
#include "ncdeco/harness/output.hpp"
#include "ncdeco/harness/scenario.hpp"
#include "ncdeco/harness/selftest.hpp"
#include "ncdeco/model.hpp"
#include "ncdeco/operators.hpp"
