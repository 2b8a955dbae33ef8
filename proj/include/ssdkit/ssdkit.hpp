#pragma once

// Umbrella header. voc.hpp (Boost.PropertyTree) is not included here.

#include "ssdkit/anchors.hpp"
#include "ssdkit/distribution.hpp"
#include "ssdkit/ensemble.hpp"
#include "ssdkit/errors.hpp"
#include "ssdkit/evaluation.hpp"
#include "ssdkit/geometry.hpp"
#include "ssdkit/io.hpp"
#include "ssdkit/records.hpp"
#include "ssdkit/reports.hpp"
#include "ssdkit/training.hpp"
