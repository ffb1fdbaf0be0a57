#pragma once

// Umbrella header.

#include "getuda/data.hpp"
#include "getuda/errors.hpp"
#include "getuda/losses.hpp"
#include "getuda/matrix.hpp"
#include "getuda/model.hpp"
#include "getuda/pipeline.hpp"
#include "getuda/random.hpp"
#include "getuda/spectral.hpp"
#include "getuda/theory.hpp"
