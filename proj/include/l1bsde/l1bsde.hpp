#pragma once

// Everything at once. Individual headers are self-contained if compile time matters.

#include "l1bsde/acceptance.hpp"
#include "l1bsde/analysis.hpp"
#include "l1bsde/bsde.hpp"
#include "l1bsde/bsde_mc.hpp"
#include "l1bsde/catalog.hpp"
#include "l1bsde/convolution.hpp"
#include "l1bsde/manifest.hpp"
#include "l1bsde/norms.hpp"
#include "l1bsde/penalization.hpp"
#include "l1bsde/reflected.hpp"
#include "l1bsde/regularize.hpp"
#include "l1bsde/runner.hpp"
#include "l1bsde/validators.hpp"
