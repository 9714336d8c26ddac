#pragma once

#include "vsmooth/channel.hpp"
#include "vsmooth/error.hpp"
#include "vsmooth/fluid.hpp"
#include "vsmooth/metrics.hpp"
#include "vsmooth/smoother.hpp"
#include "vsmooth/trace.hpp"
