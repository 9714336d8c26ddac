#pragma once

#include "vsmooth/fluid/io.hpp"
#include "vsmooth/fluid/mc_oracle.hpp"
#include "vsmooth/fluid/model.hpp"
#include "vsmooth/fluid/solve.hpp"
