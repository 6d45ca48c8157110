#pragma once

#include "hetsub/alpcahus.hpp"
#include "hetsub/baselines.hpp"
#include "hetsub/config.hpp"
#include "hetsub/core.hpp"
#include "hetsub/experiment.hpp"
#include "hetsub/io.hpp"
#include "hetsub/ksubspaces.hpp"
#include "hetsub/linalg.hpp"
#include "hetsub/lr_alpcah.hpp"
#include "hetsub/metrics.hpp"
#include "hetsub/rank.hpp"
#include "hetsub/spectral.hpp"
#include "hetsub/synth.hpp"
