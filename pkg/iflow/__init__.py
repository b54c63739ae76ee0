# import os
# os.environ['__IFLOW_DEBUG__'] = '1'

__program__ = 'IFLOW'
__version__ = '0.1.0'
__author__  = 'Stéphane MEYER (Teegre)'
