#pragma once

// Umbrella header for the instruction-adherence stability auditing library.

#include "stabaudit/aggregation.hpp"
#include "stabaudit/checks.hpp"
#include "stabaudit/config.hpp"
#include "stabaudit/corpus.hpp"
#include "stabaudit/embedding.hpp"
#include "stabaudit/errors.hpp"
#include "stabaudit/judge_client.hpp"
#include "stabaudit/judgment.hpp"
#include "stabaudit/prompts.hpp"
#include "stabaudit/reasoning_metrics.hpp"
#include "stabaudit/report.hpp"
#include "stabaudit/rubric.hpp"
#include "stabaudit/run_harness.hpp"
#include "stabaudit/simulator.hpp"
#include "stabaudit/store.hpp"
#include "stabaudit/text.hpp"
#include "stabaudit/verdict_metrics.hpp"
