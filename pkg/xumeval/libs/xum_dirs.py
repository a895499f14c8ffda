# -*- coding: utf-8 -*-
#
# This file is part of the xumeval project
#
# Copyright © xumeval Project Contributors
# Licensed under the terms of the MIT License
# (see file LICENSE in root directory for details)

"""
Handle directories in an OS-independent way, find logging directory etc.
Upon import, all the path variables are set; directories and user config
files are only created when :func:`create_conf_files` is called (by
``xumevalx`` at start-up).
"""

import os
import shutil
import platform
import tempfile
import datetime

def valid(path):
    """ Check whether path exists and is valid"""
    if path and os.path.isdir(path):
        return True
    return False

def env(name):
    """
    Get value for environment variable ``name`` from the OS.

    Parameters
    ----------
    name : str
       environment variable

    Returns
    -------
    str
      value of environment variable or '' when it is not set
    """
    return os.environ.get( name, '' )

def get_home_dir():
    """
    Return the user's home directory and name
    """
    if OS != "Windows":
    # set home directory from user name for Mac and Linux when started as user or
    # sudo user
        user_name = os.getenv('SUDO_USER') or os.getenv('USER')
        if user_name is None:
            user_name = ""
        home_dir = os.path.expanduser('~'+user_name)
    else:
        user_name = os.getenv('USER') or os.getenv('USERNAME') or ""
        home_dir = env( 'USERPROFILE' )
        if not valid(home_dir):
            home_dir = env( 'HOME' )
            if not valid(home_dir) :
                home_dir = '%s%s' % (env('HOMEDRIVE'),env('HOMEPATH'))
    return home_dir, user_name

#------------------------------------------------------------------------------
def get_log_dir():
    """
    Try different OS-dependent locations for the logging directory and return
    the first suitable directory name, creating ``.xumeval`` when needed.

    Returns None when no writable location exists.
    """
    # list of base directories for constructing the logging directory
    log_dirs = ['/var/log/', TEMP_DIR]
    for d in log_dirs:
        log_dir_xum = os.path.join(d, '.xumeval')
        # check whether directory /..../.xumeval exists and is writable
        if valid(log_dir_xum) and os.access(log_dir_xum, os.W_OK):
            return log_dir_xum
        elif valid(d) and os.access(d, os.W_OK):
            try:
                os.mkdir(log_dir_xum)
                return log_dir_xum
            except (IOError, OSError):
                return d # use base directory instead if it is writable
    return None

#------------------------------------------------------------------------------
def get_conf_dir():
    """Return the user's configuration directory, creating it when needed"""
    conf_dir = os.path.join(HOME_DIR, '.xumeval')

    if valid(conf_dir) and os.access(conf_dir, os.W_OK):
        return conf_dir
    else:
        try:
            os.mkdir(conf_dir)
            return conf_dir
        except (IOError, OSError):
            return TEMP_DIR

#------------------------------------------------------------------------------
def create_conf_files():
    """
    Copy the configuration and logging configuration templates to the user
    directory if they don't exist there yet. The user copies can be edited
    without admin access rights. Also fix the log directory / file names.

    Returns
    -------
    list of str
        messages about created files, to be logged once logging is up
    """
    global CONF_DIR, USER_CONF_DIR_FILE, USER_LOG_CONF_DIR_FILE
    global LOG_DIR, LOG_DIR_FILE
    msgs = []

    CONF_DIR = get_conf_dir()
    USER_CONF_DIR_FILE = os.path.join(CONF_DIR, CONF_FILE)
    USER_LOG_CONF_DIR_FILE = os.path.join(CONF_DIR, LOG_CONF_FILE)

    LOG_DIR = get_log_dir()
    LOG_DIR_FILE = os.path.join(LOG_DIR, LOG_FILE) if LOG_DIR else None

    for tmpl, user in ((TMPL_CONF_DIR_FILE, USER_CONF_DIR_FILE),
                       (TMPL_LOG_CONF_DIR_FILE, USER_LOG_CONF_DIR_FILE)):
        if not os.path.isfile(user):
            try:
                shutil.copyfile(tmpl, user)
                msgs.append('Config file "{0}" didn\'t exist yet, created it.'.format(user))
            except IOError as e:
                msgs.append("Couldn't create config file: {0}".format(e))
    return msgs

#==============================================================================
OS     = platform.system()
OS_VER = platform.release()

CONF_FILE = 'xumeval.conf'            #: name for general configuration file
LOG_CONF_FILE = 'xumeval_log.conf'    #: name for logging configuration file

THIS_DIR = os.path.dirname(os.path.abspath(__file__)) # dir of this file
INSTALL_DIR = os.path.normpath(os.path.join(THIS_DIR, '..'))

TEMP_DIR = tempfile.gettempdir() #: Temp directory for constructing logging dir

HOME_DIR, USER_NAME = get_home_dir() #: Home dir and user name

TODAY = datetime.datetime.now().strftime("%Y%m%d-%H%M%S")

LOG_FILE = 'xumeval_{0}.log'.format(TODAY)
#: Full path of the log file, set by :func:`create_conf_files`
LOG_DIR = None
LOG_DIR_FILE = None

CONF_DIR = os.path.join(HOME_DIR, '.xumeval')
# full path name of user configuration file:
USER_CONF_DIR_FILE     = os.path.join(CONF_DIR, CONF_FILE)
# full path name of logging configuration file:
USER_LOG_CONF_DIR_FILE = os.path.join(CONF_DIR, LOG_CONF_FILE)
# full path name of configuration template:
TMPL_CONF_DIR_FILE = os.path.join(INSTALL_DIR, 'xumeval_template.conf')
# full path name of logging configuration template:
TMPL_LOG_CONF_DIR_FILE = os.path.join(INSTALL_DIR, 'xumeval_log_template.conf')
