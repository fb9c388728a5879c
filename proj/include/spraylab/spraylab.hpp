#pragma once

#include "spraylab/classify.hpp"
#include "spraylab/corpus.hpp"
#include "spraylab/dim2.hpp"
#include "spraylab/dsl.hpp"
#include "spraylab/errors.hpp"
#include "spraylab/finite_difference.hpp"
#include "spraylab/geometry.hpp"
#include "spraylab/jet.hpp"
#include "spraylab/metrize.hpp"
#include "spraylab/oracle.hpp"
#include "spraylab/pflat.hpp"
#include "spraylab/report.hpp"
#include "spraylab/sampling.hpp"
