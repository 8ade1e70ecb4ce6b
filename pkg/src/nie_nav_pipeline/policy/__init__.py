from nie_nav_pipeline.policy.agent import (
    AgentInputs,
    AgentOutput,
    AgentStep,
    InteractiveNavAgent,
    SequenceOutput,
    sample_actions,
)
from nie_nav_pipeline.policy.network import PolicyNetwork, PolicyOutput, policy_forward
from nie_nav_pipeline.policy.visual import DEPTH_SCALE, VisualEncoder, encoding_width, observation_encoding
