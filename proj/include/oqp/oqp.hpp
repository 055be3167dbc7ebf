#pragma once

#include "oqp/csvio.hpp"
#include "oqp/harness.hpp"

// Umbrella header: the full engine, planner, harness, and file plumbing.
