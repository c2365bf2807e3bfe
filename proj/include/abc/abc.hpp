#pragma once

// Everything except the command-line front end.

#include "abc/bench.hpp"
#include "abc/bench_gen.hpp"
#include "abc/certification.hpp"
#include "abc/composition.hpp"
#include "abc/core.hpp"
#include "abc/drift.hpp"
#include "abc/eval.hpp"
#include "abc/json_io.hpp"
#include "abc/monitor.hpp"
#include "abc/ou.hpp"
#include "abc/parser.hpp"
