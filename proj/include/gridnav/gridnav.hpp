#pragma once

#include "gridnav/augment.hpp"
#include "gridnav/core.hpp"
#include "gridnav/detector.hpp"
#include "gridnav/gridworld.hpp"
#include "gridnav/mapper.hpp"
#include "gridnav/narrator.hpp"
#include "gridnav/nn/adadelta.hpp"
#include "gridnav/nn/layers.hpp"
#include "gridnav/nn/net.hpp"
#include "gridnav/nn/tensor.hpp"
#include "gridnav/nn/weights_io.hpp"
#include "gridnav/scansim.hpp"
#include "gridnav/tracker.hpp"
#include "gridnav/worldgen.hpp"
