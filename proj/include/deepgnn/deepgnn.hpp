#pragma once

#include "deepgnn/checkpoint.hpp"
#include "deepgnn/classifier.hpp"
#include "deepgnn/dataset.hpp"
#include "deepgnn/dense.hpp"
#include "deepgnn/error.hpp"
#include "deepgnn/gradcheck.hpp"
#include "deepgnn/graph.hpp"
#include "deepgnn/models.hpp"
#include "deepgnn/nn.hpp"
#include "deepgnn/random.hpp"
#include "deepgnn/smoothness.hpp"
#include "deepgnn/spectral.hpp"
#include "deepgnn/training.hpp"
