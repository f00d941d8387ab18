/*
   Copyright 2026 The profsim Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

// Everything except the relay data fetcher (profsim/ingest/fetch.hpp), which
// pulls in the HTTP client and must be linked against profsim::net.

#include "profsim/core/hash.hpp"
#include "profsim/core/rng.hpp"
#include "profsim/core/state.hpp"
#include "profsim/core/types.hpp"

#include "profsim/amm/demand.hpp"
#include "profsim/amm/mechanism.hpp"
#include "profsim/amm/pool.hpp"

#include "profsim/latency/fixture.hpp"
#include "profsim/latency/latency.hpp"

#include "profsim/pbs/bid_stream.hpp"
#include "profsim/pbs/event_log.hpp"
#include "profsim/pbs/relay.hpp"

#include "profsim/prof/hybrid.hpp"
#include "profsim/prof/merger.hpp"
#include "profsim/prof/prof_share.hpp"
#include "profsim/prof/protocol_sim.hpp"
#include "profsim/prof/sequencer.hpp"

#include "profsim/ingest/bid_traces.hpp"
#include "profsim/ingest/swap_events.hpp"
