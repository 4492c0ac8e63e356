#pragma once

// Convenience umbrella for the whole kernel and harness.

#include "timewarp/engine.hpp"
#include "timewarp/event_queue.hpp"
#include "timewarp/fault.hpp"
#include "timewarp/gvt_fh.hpp"
#include "timewarp/gvt_protocol.hpp"
#include "timewarp/gvt_waitfree.hpp"
#include "timewarp/harness.hpp"
#include "timewarp/inbox.hpp"
#include "timewarp/lp_state.hpp"
#include "timewarp/message.hpp"
#include "timewarp/model.hpp"
#include "timewarp/oracle.hpp"
#include "timewarp/phold.hpp"
#include "timewarp/rng.hpp"
#include "timewarp/virtual_time.hpp"
#include "timewarp/worker.hpp"
