#pragma once

#include "levy_bsde/analysis.hpp"
#include "levy_bsde/assumptions.hpp"
#include "levy_bsde/comparison.hpp"
#include "levy_bsde/error.hpp"
#include "levy_bsde/format.hpp"
#include "levy_bsde/generator.hpp"
#include "levy_bsde/inequalities.hpp"
#include "levy_bsde/levy_model.hpp"
#include "levy_bsde/parallel.hpp"
#include "levy_bsde/path_ensemble.hpp"
#include "levy_bsde/random.hpp"
#include "levy_bsde/registry.hpp"
#include "levy_bsde/regression.hpp"
#include "levy_bsde/rho.hpp"
#include "levy_bsde/solver.hpp"
#include "levy_bsde/terminal.hpp"
#include "levy_bsde/truncation.hpp"
#include "levy_bsde/version.hpp"
