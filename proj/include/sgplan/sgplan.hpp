#pragma once

// Umbrella include. remote_backend.hpp is deliberately left out; include it
// directly when an HTTP backend is needed.

#include "actions.hpp"
#include "bench.hpp"
#include "llm.hpp"
#include "orchestrator.hpp"
#include "path_planner.hpp"
#include "prompt_text.hpp"
#include "scene_graph.hpp"
#include "simulator.hpp"
#include "util.hpp"
