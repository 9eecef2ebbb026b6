#pragma once

#include "tubelink/error.hpp"
#include "tubelink/evaluation.hpp"
#include "tubelink/fusion.hpp"
#include "tubelink/geometry.hpp"
#include "tubelink/io/json_format.hpp"
#include "tubelink/io/serialization.hpp"
#include "tubelink/linker.hpp"
#include "tubelink/rng.hpp"
#include "tubelink/suppression.hpp"
#include "tubelink/synthgen.hpp"
#include "tubelink/timing.hpp"
#include "tubelink/tube_model.hpp"
