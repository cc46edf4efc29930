from .audio import (AudioModel, AudioProblem, acs_grad_theta, acs_grad_x, acs_log_joint,
                    map_reconstruct, mse, theta_cs)
from .huber import huber, huber_grad
from .logistic import (BayesianLogisticModel, LogisticData, blr_grad_theta, blr_grad_x,
                       blr_log_joint, sigmoid)
from .random_effects import (RandomEffectsModel, RandomEffectsProblem, re_grad_penalty,
                             re_grad_theta, re_grad_x, re_log_joint)
from .toy import ConjugateGaussianModel
