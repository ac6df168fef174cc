#pragma once

#include "cmggib/analysis.hpp"
#include "cmggib/autograd.hpp"
#include "cmggib/checkpoint.hpp"
#include "cmggib/cmg.hpp"
#include "cmggib/config.hpp"
#include "cmggib/corpus.hpp"
#include "cmggib/embedding.hpp"
#include "cmggib/errors.hpp"
#include "cmggib/fusion.hpp"
#include "cmggib/gene.hpp"
#include "cmggib/lamo.hpp"
#include "cmggib/metrics.hpp"
#include "cmggib/model.hpp"
#include "cmggib/nn.hpp"
#include "cmggib/sg_core.hpp"
#include "cmggib/synth.hpp"
#include "cmggib/training.hpp"
