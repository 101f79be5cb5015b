"""Generator and critic networks, losses, training and checkpoints."""
