#pragma once

#include "snesep/affinity.hpp"
#include "snesep/certify.hpp"
#include "snesep/core.hpp"
#include "snesep/datagen.hpp"
#include "snesep/io.hpp"
#include "snesep/kernels.hpp"
#include "snesep/objective.hpp"
#include "snesep/optimizer.hpp"
#include "snesep/parallel.hpp"
#include "snesep/quality.hpp"
