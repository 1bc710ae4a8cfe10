#pragma once

#include "lpf/adapters.hpp"
#include "lpf/aggregate.hpp"
#include "lpf/config.hpp"
#include "lpf/corpus.hpp"
#include "lpf/digest.hpp"
#include "lpf/error.hpp"
#include "lpf/http_backend.hpp"
#include "lpf/lemmas.hpp"
#include "lpf/metrics.hpp"
#include "lpf/pipeline.hpp"
#include "lpf/records.hpp"
#include "lpf/report.hpp"
#include "lpf/scoring.hpp"
#include "lpf/stats.hpp"
#include "lpf/text.hpp"
#include "lpf/toml_json.hpp"
