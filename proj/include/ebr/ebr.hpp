#pragma once

#include <ebr/answers.hpp>
#include <ebr/commands.hpp>
#include <ebr/constraints.hpp>
#include <ebr/core.hpp>
#include <ebr/diagnostics.hpp>
#include <ebr/errors.hpp>
#include <ebr/featurize.hpp>
#include <ebr/itinerary.hpp>
#include <ebr/knights.hpp>
#include <ebr/metrics.hpp>
#include <ebr/parallel.hpp>
#include <ebr/random.hpp>
#include <ebr/scorer.hpp>
#include <ebr/select.hpp>
#include <ebr/synthetic.hpp>
#include <ebr/theory.hpp>
#include <ebr/triage.hpp>
