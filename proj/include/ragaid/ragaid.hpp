/// @file ragaid.hpp
/// @brief Umbrella header: pitch tracking, tonal features, classification and joint tonic/raga search.

#pragma once

#include "ragaid/audio.hpp"
#include "ragaid/classify.hpp"
#include "ragaid/config.hpp"
#include "ragaid/error.hpp"
#include "ragaid/eval.hpp"
#include "ragaid/feature_db.hpp"
#include "ragaid/features.hpp"
#include "ragaid/manifest.hpp"
#include "ragaid/pitch_track.hpp"
#include "ragaid/pitch_tracker.hpp"
#include "ragaid/synth.hpp"
#include "ragaid/tonic.hpp"
