from setuptools import setup

setup(name='beliefddp',
      version='1.0',
      description='Belief-space differential dynamic programming for planning under latent-state uncertainty',
      packages=['beliefddp', 'beliefddp.classes'],
      package_data={'beliefddp': ['config/*.yaml', 'bashscripts/*.sh']},
      install_requires=['PyYAML', 'numpy', 'scipy'],
      extras_require={'tests': ['pytest']},
      entry_points={'console_scripts': ['plan_runner=beliefddp.plan_runner:main']}
      )
