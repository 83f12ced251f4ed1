#pragma once

#include "cvnn/activations.hpp"
#include "cvnn/bounds.hpp"
#include "cvnn/checkpoint.hpp"
#include "cvnn/complex_linalg.hpp"
#include "cvnn/conv.hpp"
#include "cvnn/covering.hpp"
#include "cvnn/datasets.hpp"
#include "cvnn/errors.hpp"
#include "cvnn/experiment.hpp"
#include "cvnn/network.hpp"
#include "cvnn/spectral.hpp"
#include "cvnn/stats.hpp"
